#include "kernels_detail.hpp"

namespace mckv::kernels::serial {

void euler_step(const EulerArgs& args) {
    detail::EulerScratch scratch(args.current->dim());
    for (std::size_t p = 0; p < args.current->size(); ++p) detail::euler_particle(args, p, scratch);
}

std::vector<double> bootstrap_means(const BootstrapMeansArgs& args) {
    std::vector<double> out(static_cast<std::size_t>(args.n_boot) * args.cols);
    std::vector<double> sums(args.cols);
    for (int r = 0; r < args.n_boot; ++r) {
        detail::bootstrap_means_replicate(args, r, sums,
                                          std::span<double>(out.data() + static_cast<std::size_t>(r) * args.cols, args.cols));
    }
    return out;
}

std::vector<double> bootstrap_covariances(const BootstrapCovArgs& args) {
    const std::size_t p = args.pairs.size();
    std::vector<double> out(static_cast<std::size_t>(args.n_boot) * p);
    std::vector<std::uint32_t> counts(args.rows);
    std::vector<double> sum_u(args.cols);
    for (int r = 0; r < args.n_boot; ++r) {
        detail::bootstrap_cov_replicate(args, r, counts, sum_u,
                                        std::span<double>(out.data() + static_cast<std::size_t>(r) * p, p));
    }
    return out;
}

}  // namespace mckv::kernels::serial
