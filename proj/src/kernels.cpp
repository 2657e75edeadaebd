#include "mval/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace mval::kern {
namespace {

const KernelTable* select_default() {
    if (const char* env = std::getenv("MVAL_ISA")) {
        const std::string_view want(env);
        if (want == "scalar") return &scalar_table();
        if (want == "avx2") {
            if (const KernelTable* t = avx2_table()) return t;
            // fall through to auto when the env asks for something unavailable
        }
    }
    if (const KernelTable* t = avx2_table()) return t;
    return &scalar_table();
}

std::atomic<const KernelTable*>& active_slot() {
    static std::atomic<const KernelTable*> slot{select_default()};
    return slot;
}

} // namespace

const KernelTable& active() { return *active_slot().load(std::memory_order_relaxed); }

void force_isa(std::string_view name) {
    if (name == "scalar") {
        active_slot().store(&scalar_table(), std::memory_order_relaxed);
    } else if (name == "avx2") {
        const KernelTable* t = avx2_table();
        if (!t) throw std::runtime_error("avx2 kernels not available on this machine");
        active_slot().store(t, std::memory_order_relaxed);
    } else if (name == "auto") {
        const KernelTable* t = avx2_table();
        active_slot().store(t ? t : &scalar_table(), std::memory_order_relaxed);
    } else {
        throw std::runtime_error("unknown isa: " + std::string(name));
    }
}

} // namespace mval::kern
