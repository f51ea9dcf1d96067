#include "kernels_detail.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mckv::kernels {

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

namespace omp {

void euler_step(const EulerArgs& args) {
    const auto n = static_cast<std::ptrdiff_t>(args.current->size());
    detail::FirstError first;
#pragma omp parallel
    {
        detail::EulerScratch scratch(args.current->dim());
        detail::FirstError local;
#pragma omp for schedule(static)
        for (std::ptrdiff_t p = 0; p < n; ++p) {
            try {
                detail::euler_particle(args, static_cast<std::size_t>(p), scratch);
            } catch (...) {
                local.record(static_cast<std::size_t>(p), std::current_exception());
            }
        }
#pragma omp critical(mckv_euler_error)
        first.merge(local);
    }
    first.rethrow();
}

std::vector<double> bootstrap_means(const BootstrapMeansArgs& args) {
    std::vector<double> out(static_cast<std::size_t>(args.n_boot) * args.cols);
#pragma omp parallel
    {
        std::vector<double> sums(args.cols);
#pragma omp for schedule(static)
        for (int r = 0; r < args.n_boot; ++r) {
            detail::bootstrap_means_replicate(
                args, r, sums, std::span<double>(out.data() + static_cast<std::size_t>(r) * args.cols, args.cols));
        }
    }
    return out;
}

std::vector<double> bootstrap_covariances(const BootstrapCovArgs& args) {
    const std::size_t p = args.pairs.size();
    std::vector<double> out(static_cast<std::size_t>(args.n_boot) * p);
#pragma omp parallel
    {
        std::vector<std::uint32_t> counts(args.rows);
        std::vector<double> sum_u(args.cols);
#pragma omp for schedule(static)
        for (int r = 0; r < args.n_boot; ++r) {
            detail::bootstrap_cov_replicate(args, r, counts, sum_u,
                                            std::span<double>(out.data() + static_cast<std::size_t>(r) * p, p));
        }
    }
    return out;
}

}  // namespace omp
}  // namespace mckv::kernels
