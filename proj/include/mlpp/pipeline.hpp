#pragma once

#include <map>
#include <optional>
#include <string>

#include "mlpp/fpca.hpp"
#include "mlpp/hyperparams.hpp"
#include "mlpp/model.hpp"

namespace mlpp {

struct PipelineOptions {
    bool smooth = true;
    SmoothingOptions smoothing;
    FpcaOptions fpca;
    /// Fixed T x K eigenfunctions; when set, fPCA is skipped and scores are projections on them.
    std::optional<Eigen::MatrixXd> eigenfunctions;
    HyperParamOptions hyper;
    /// Use these instead of estimating from the scores.
    std::optional<HyperParams> preset;
    std::optional<Scenario> scenario;
    std::map<std::string, std::string> overrides;
};

struct PreparedFit {
    FunctionalDataset<double> smoothed;
    EigenBasis<double> basis;
    ModelData model;
    HyperParams hyper;
    std::optional<double> smoothing_penalty;
};

/// Smoothing, basis, centring and prior constants in the order a fit needs them.
PreparedFit prepare_fit(const FunctionalDataset<double>& raw, const PipelineOptions& opt);

}  // namespace mlpp
