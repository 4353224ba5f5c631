#include "auf/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace auf::kern {
namespace {

const Ops& select() {
    const char* force = std::getenv("AUF_KERNELS");
    if (force != nullptr && std::strcmp(force, "scalar") == 0)
        return scalar_ops();
#if defined(__x86_64__) || defined(__i386__)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return avx2_ops();
#endif
    return scalar_ops();
}

}  // namespace

const Ops& ops() {
    static const Ops& table = select();
    return table;
}

}  // namespace auf::kern
