#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace disrbm {

/// Worker bound for data-parallel loops. 0 means "use hardware concurrency".
/// The CLI sets this from --threads / DISRBM_THREADS.
inline int& thread_limit() {
    static int limit = 0;
    return limit;
}

inline int effective_threads() {
    int limit = thread_limit();
    if (limit > 0) return limit;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Static block partition of [0, n). Each index is processed exactly once and
/// results must be written to disjoint slots, so the outcome is independent
/// of the thread count.
template <typename F>
void parallel_for(long n, F&& body) {
    const int nt = std::min<long>(effective_threads(), n) > 0
                       ? static_cast<int>(std::min<long>(effective_threads(), n))
                       : 1;
    if (nt <= 1 || n <= 1) {
        for (long i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nt);
    const long chunk = (n + nt - 1) / nt;
    for (int t = 0; t < nt; ++t) {
        const long lo = t * chunk;
        const long hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (long i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace disrbm
