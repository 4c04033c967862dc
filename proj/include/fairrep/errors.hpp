#pragma once

#include <stdexcept>
#include <string>

namespace fairrep {

enum class errc {
    missing_column,
    non_binary_sensitive,
    empty_task,
    constant_column,
    group_depleted,
    too_few_rows,
    invalid_spec,
    group_missing,
    dimension_mismatch,
    degenerate_range,
    empty_levels,
    singular_system,
    full_span_constraint,
    zero_matrix,
    no_convergence,
    invalid_inputs,
    all_combinations_failed,
    double_encoding,
    io_error,
};

const char* errc_name(errc code);

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
    errc code() const { return code_; }

private:
    errc code_;
};

// Bad inputs, files, or configuration. CLI exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

// The computation itself failed. CLI exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

inline const char* errc_name(errc code) {
    switch (code) {
    case errc::missing_column: return "MissingColumn";
    case errc::non_binary_sensitive: return "NonBinarySensitive";
    case errc::empty_task: return "EmptyTask";
    case errc::constant_column: return "ConstantColumn";
    case errc::group_depleted: return "GroupDepleted";
    case errc::too_few_rows: return "TooFewRows";
    case errc::invalid_spec: return "InvalidSpec";
    case errc::group_missing: return "GroupMissing";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::degenerate_range: return "DegenerateRange";
    case errc::empty_levels: return "EmptyLevels";
    case errc::singular_system: return "SingularSystem";
    case errc::full_span_constraint: return "FullSpanConstraint";
    case errc::zero_matrix: return "ZeroMatrix";
    case errc::no_convergence: return "NoConvergence";
    case errc::invalid_inputs: return "InvalidInputs";
    case errc::all_combinations_failed: return "AllCombinationsFailed";
    case errc::double_encoding: return "DoubleEncoding";
    case errc::io_error: return "IoError";
    }
    return "UnknownError";
}

} // namespace fairrep
