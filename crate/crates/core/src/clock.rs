#[cfg(not(target_arch = "wasm32"))]
pub(crate) use std::time::Instant;

/// Stand-in for targets without a monotonic clock; elapsed time reads as zero.
#[cfg(target_arch = "wasm32")]
#[derive(Debug, Clone, Copy)]
pub(crate) struct Instant;

#[cfg(target_arch = "wasm32")]
impl Instant {
    pub(crate) fn now() -> Self {
        Instant
    }

    pub(crate) fn elapsed(&self) -> std::time::Duration {
        std::time::Duration::ZERO
    }
}
