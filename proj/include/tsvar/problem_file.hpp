#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tsvar/composition.hpp"
#include "tsvar/inverse.hpp"
#include "tsvar/variational.hpp"

namespace tsvar {

// One problem per file, in a line-oriented sectioned key = value format:
//
//   [variational]                  # or composition / synthesis / helmholtz
//   scale = hZ(0.25, 0, 1)
//   lagrangian = "v^2 + y^2"
//   flavor = delta
//   y_a = 0
//   y_b = 1
//
// Expressions are quoted, lists bracketed: delta_f = ["t*v", "v^2"].
// An optional [output] section may set format and tolerance. Unknown keys
// are rejected with their location.
struct ProblemFile {
    enum class Kind { variational, composition, synthesis, helmholtz };
    Kind kind = Kind::variational;

    std::optional<VariationalProblem> variational;
    std::optional<CompositionProblem> composition;
    std::optional<SynthesisSpec> synthesis;

    struct Helmholtz {
        TimeScalePtr scale;
        Expression H, G;
        int trials = 16;
        std::uint64_t seed = 0;
    };
    std::optional<Helmholtz> helmholtz;

    // optional candidate data used by the check commands
    std::optional<GridFunction> candidate_y;
    std::optional<double> lambda;
    std::optional<Objective> objective;

    // [output] overrides
    std::optional<std::string> format;
    std::optional<double> tolerance;

    TimeScalePtr scale() const;
};

ProblemFile load_problem(const std::string& path);
ProblemFile parse_problem_text(const std::string& text, const std::string& origin);

} // namespace tsvar
