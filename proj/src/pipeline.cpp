#include "mlpp/pipeline.hpp"

#include "mlpp/error.hpp"

namespace mlpp {

PreparedFit prepare_fit(const FunctionalDataset<double>& raw, const PipelineOptions& opt) {
    raw.validate();
    PreparedFit out;
    if (opt.smooth) {
        SmoothingResult info;
        out.smoothed = smooth_dataset(raw, opt.smoothing, &info);
        out.smoothing_penalty = info.penalty;
    } else {
        out.smoothed = raw;
    }
    out.basis = opt.eigenfunctions ? basis_from_eigenfunctions(out.smoothed, *opt.eigenfunctions)
                                   : fit_fpca(out.smoothed, opt.fpca);
    out.model = make_model_data(out.smoothed, out.basis);
    if (opt.preset) {
        out.hyper = *opt.preset;
        if (out.hyper.components() != out.basis.components())
            throw DimensionError("hyperparameter file has " + std::to_string(out.hyper.components()) +
                                 " dimensions, basis has " + std::to_string(out.basis.components()));
    } else {
        out.hyper = estimate_hyperparams(out.basis, out.smoothed.group_of, opt.hyper);
    }
    if (opt.scenario) out.hyper = apply_scenario(out.hyper, *opt.scenario);
    if (!opt.overrides.empty()) out.hyper = apply_overrides(out.hyper, opt.overrides);
    out.hyper.validate();
    return out;
}

}  // namespace mlpp
