#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace isac::detail {

namespace {

// FFTW planning is not thread-safe; execution on distinct arrays is.
class PlanCache {
public:
    using Key = std::tuple<int, int, int, int, int>;  // n, howmany, stride, dist, sign

    fftw_plan get(int n, int howmany, int stride, int dist, int sign) {
        std::lock_guard lock(mutex_);
        const Key key{n, howmany, stride, dist, sign};
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        auto* buf = fftw_alloc_complex(static_cast<std::size_t>(n) * howmany);
        fftw_plan p = fftw_plan_many_dft(1, &n, howmany, buf, nullptr, stride, dist, buf, nullptr, stride, dist, sign,
                                         FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(buf);
        plans_.emplace(key, p);
        return p;
    }

    ~PlanCache() {
        for (auto& [k, p] : plans_) fftw_destroy_plan(p);
    }

private:
    std::mutex mutex_;
    std::map<Key, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache c;
    return c;
}

void run(Eigen::MatrixXcd& m, int n, int howmany, int stride, int dist, FftSign sign) {
    if (n == 0 || howmany == 0) return;
    fftw_plan p = cache().get(n, howmany, stride, dist, static_cast<int>(sign));
    auto* data = reinterpret_cast<fftw_complex*>(m.data());
    fftw_execute_dft(p, data, data);
}

}  // namespace

void fft_columns(Eigen::MatrixXcd& m, FftSign sign) {
    const int rows = static_cast<int>(m.rows()), cols = static_cast<int>(m.cols());
    run(m, rows, cols, 1, rows, sign);
}

void fft_rows(Eigen::MatrixXcd& m, FftSign sign) {
    const int rows = static_cast<int>(m.rows()), cols = static_cast<int>(m.cols());
    run(m, cols, rows, rows, 1, sign);
}

}  // namespace isac::detail
