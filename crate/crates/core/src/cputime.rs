//! CPU clocks. Each experiment job runs on one worker thread, so the
//! thread clock isolates a job's cost from its neighbors.

use std::time::Duration;

fn clock(id: libc::clockid_t) -> Duration {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec for the duration of the call.
    let rc = unsafe { libc::clock_gettime(id, &mut ts) };
    if rc != 0 {
        return Duration::ZERO;
    }
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

/// CPU time consumed by the calling thread.
pub fn thread_cpu_time() -> Duration {
    clock(libc::CLOCK_THREAD_CPUTIME_ID)
}

/// CPU time consumed by the whole process.
pub fn process_cpu_time() -> Duration {
    clock(libc::CLOCK_PROCESS_CPUTIME_ID)
}

/// Thread CPU seconds spent in `f`.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = thread_cpu_time();
    let out = f();
    (out, (thread_cpu_time() - start).as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clocks_advance_under_work() {
        let ((), secs) = measure(|| {
            let mut x = 0u64;
            for i in 0..5_000_000u64 {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(i);
            }
            std::hint::black_box(x);
        });
        assert!(secs > 0.0);
        assert!(process_cpu_time() >= thread_cpu_time());
    }
}
