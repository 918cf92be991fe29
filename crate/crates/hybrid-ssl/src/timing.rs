//! Wall-clock helper that degrades gracefully on targets without a monotonic
//! clock (`Instant::now` aborts on bare wasm32). All timings in this crate go
//! through [`Stopwatch`] so the training loops stay portable; on wasm the
//! reported durations are simply zero.

#[cfg(not(target_arch = "wasm32"))]
pub struct Stopwatch(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Stopwatch {
    pub fn start() -> Self {
        Stopwatch(std::time::Instant::now())
    }

    /// Elapsed milliseconds since `start`.
    pub fn elapsed_ms(&self) -> f64 {
        self.0.elapsed().as_secs_f64() * 1000.0
    }
}

#[cfg(target_arch = "wasm32")]
pub struct Stopwatch;

#[cfg(target_arch = "wasm32")]
impl Stopwatch {
    pub fn start() -> Self {
        Stopwatch
    }

    pub fn elapsed_ms(&self) -> f64 {
        0.0
    }
}
