#pragma once

namespace corrtrack {

/// Keeps freed feature buffers in the process heap instead of returning them
/// to the OS, so repeated multi-megabyte maps do not fault in fresh pages.
/// No-op outside glibc.
void keep_heap_resident();

}  // namespace corrtrack
