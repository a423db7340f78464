#include "fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <memory>
#include <mutex>

namespace camfuse::detail {

namespace {

// FFTW planning is not thread-safe; execution on distinct arrays is.
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(p);
    }
};
using PlanPtr = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

Spectrum fft2(const Plane& plane)
{
    Spectrum out;
    out.width = plane.width();
    out.height = plane.height();
    const std::size_t n_real = plane.size();
    const std::size_t n_complex = static_cast<std::size_t>(out.height) * out.columns();

    std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * n_real)));
    std::unique_ptr<fftw_complex, FftwFree> spec(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_complex)));
    PlanPtr plan;
    {
        std::lock_guard lock(planner_mutex());
        plan.reset(fftw_plan_dft_r2c_2d(out.height, out.width, in.get(), spec.get(), FFTW_ESTIMATE));
    }
    std::memcpy(in.get(), plane.values().data(), sizeof(double) * n_real);
    fftw_execute(plan.get());

    out.bins.resize(n_complex);
    for (std::size_t i = 0; i < n_complex; ++i) out.bins[i] = {spec.get()[i][0], spec.get()[i][1]};
    return out;
}

Plane ifft2(const Spectrum& spectrum)
{
    const std::size_t n_real = static_cast<std::size_t>(spectrum.width) * spectrum.height;
    const std::size_t n_complex = spectrum.bins.size();

    std::unique_ptr<fftw_complex, FftwFree> spec(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_complex)));
    std::unique_ptr<double, FftwFree> out(static_cast<double*>(fftw_malloc(sizeof(double) * n_real)));
    PlanPtr plan;
    {
        std::lock_guard lock(planner_mutex());
        plan.reset(fftw_plan_dft_c2r_2d(spectrum.height, spectrum.width, spec.get(), out.get(), FFTW_ESTIMATE));
    }
    // c2r destroys its input, so fill after planning.
    for (std::size_t i = 0; i < n_complex; ++i) {
        spec.get()[i][0] = spectrum.bins[i].real();
        spec.get()[i][1] = spectrum.bins[i].imag();
    }
    fftw_execute(plan.get());

    Plane result(spectrum.width, spectrum.height);
    const double scale = 1.0 / static_cast<double>(n_real);
    auto dst = result.values();
    for (std::size_t i = 0; i < n_real; ++i) dst[i] = out.get()[i] * scale;
    return result;
}

}  // namespace camfuse::detail
