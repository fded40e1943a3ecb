#include "fellerdyn/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fellerdyn {

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
    if (count <= 0) return;
    threads = std::clamp(threads, 1, count);
    if (threads == 1) {
        for (int k = 0; k < count; ++k) fn(k);
        return;
    }

    std::exception_ptr first_error;
    std::mutex err_mx;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    int base = count / threads;
    int extra = count % threads;
    int start = 0;
    for (int t = 0; t < threads; ++t) {
        int len = base + (t < extra ? 1 : 0);
        int lo = start;
        int hi = start + len;
        start = hi;
        pool.emplace_back([&, lo, hi] {
            try {
                for (int k = lo; k < hi; ++k) fn(k);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mx);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("FELLERDYN_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

}  // namespace fellerdyn
