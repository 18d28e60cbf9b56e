//! Process-level tuning for long training runs.

use std::sync::Once;

static TUNE: Once = Once::new();

/// Keeps large short-lived buffers on the heap instead of mapping and
/// unmapping them every epoch. Idempotent; a no-op off glibc.
pub fn tune_allocator() {
    TUNE.call_once(|| {
        #[cfg(all(target_os = "linux", target_env = "gnu"))]
        // SAFETY: mallopt only adjusts allocator thresholds.
        unsafe {
            libc::mallopt(libc::M_MMAP_THRESHOLD, 256 << 20);
            libc::mallopt(libc::M_TRIM_THRESHOLD, 512 << 20);
        }
    });
}
