//! Machine-independent timing unit: one CPU-sec is the thread CPU time
//! needed to evaluate the calibration sum `S(N_c)`.

use std::hint::black_box;

/// Number of terms `N_c` defining one CPU-sec.
pub const CALIBRATION_TERMS: u64 = 59_600_000;

/// `S(m) = sum_{i=1}^m (i+1)(i+3) / (i (i+2) (i+4) (i+6))`, summed in
/// index order.
pub fn calibration_sum(m: u64) -> f64 {
    let mut total = 0.0;
    for i in 1..=m {
        let x = i as f64;
        total += (x + 1.0) * (x + 3.0) / (x * (x + 2.0) * (x + 4.0) * (x + 6.0));
    }
    total
}

/// CPU time consumed by the calling thread, in seconds.
pub fn thread_cpu_time() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return 0.0;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

/// Thread CPU seconds taken by one CPU-sec, measured by evaluating `S(m)`
/// and scaling to `N_c` terms.
pub fn cpu_sec_calibrate_with(terms: u64) -> f64 {
    let terms = terms.max(1);
    let start = thread_cpu_time();
    black_box(calibration_sum(black_box(terms)));
    let elapsed = thread_cpu_time() - start;
    elapsed * CALIBRATION_TERMS as f64 / terms as f64
}

/// Thread CPU seconds per CPU-sec at the full `N_c`.
pub fn cpu_sec_calibrate() -> f64 {
    cpu_sec_calibrate_with(CALIBRATION_TERMS)
}

/// Converts thread CPU time into CPU-sec, refreshed on demand.
#[derive(Debug, Clone, Copy)]
pub struct CpuSecClock {
    terms: u64,
    seconds_per_unit: f64,
}

impl CpuSecClock {
    pub fn new(terms: u64) -> Self {
        let mut clock = CpuSecClock {
            terms,
            seconds_per_unit: 0.0,
        };
        clock.recalibrate();
        clock
    }

    pub fn recalibrate(&mut self) {
        self.seconds_per_unit = cpu_sec_calibrate_with(self.terms);
    }

    pub fn seconds_per_unit(&self) -> f64 {
        self.seconds_per_unit
    }

    pub fn to_cpu_sec(&self, seconds: f64) -> f64 {
        if self.seconds_per_unit > 0.0 {
            seconds / self.seconds_per_unit
        } else {
            f64::NAN
        }
    }
}
