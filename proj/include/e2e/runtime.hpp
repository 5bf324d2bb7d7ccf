#pragma once

namespace e2e {

/// Keeps large tensor buffers on the heap instead of fresh mmap/munmap pairs
/// per allocation. Call once at the top of main().
void tune_allocator();

}  // namespace e2e
