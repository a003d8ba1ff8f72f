#pragma once

#include <string>

#include "capomdp/constraints.hpp"
#include "capomdp/controller.hpp"
#include "capomdp/pomdp.hpp"
#include "capomdp/solver.hpp"

namespace capomdp {

/// Everything a model file carries: the POMDP plus the resource side.
struct ModelFile {
    PomdpModel model;
    ConstraintSpec constraints;
    UtilizationModel utilization;
};

ModelFile load_model_file(const std::string& path);
void save_model_file(const ModelFile& mf, const std::string& path);

/// Controller files carry the controller, its alpha vectors, the edge
/// observation matrix, the omega pool, and optionally the unconstrained
/// controller it was derived from.
struct ControllerFile {
    FiniteStateController controller;
    OmegaPool omega;
    bool converged = true;
    bool has_optimal = false;
    FiniteStateController optimal;  // populated when has_optimal
};

ControllerFile load_controller_file(const std::string& path);
void save_controller_file(const ControllerFile& cf, const std::string& path);

}  // namespace capomdp
