#pragma once

#include <stdexcept>
#include <string>

namespace cxbench {

// Error codes, grouped so the CLI can map them onto exit codes
// (config problems -> 2, data problems -> 3).
enum class errc {
    // data
    missing_file,
    missing_column,
    no_usable_rows,
    constant_target,
    too_few_rows,
    parse_error,
    bad_shape,
    // usage / configuration
    bad_argument,
    dimension_mismatch,
    single_class,
    bad_config,
};

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    errc code() const noexcept { return code_; }

private:
    errc code_;
};

inline bool is_data_error(errc c) {
    switch (c) {
    case errc::missing_file:
    case errc::missing_column:
    case errc::no_usable_rows:
    case errc::constant_target:
    case errc::too_few_rows:
    case errc::parse_error:
    case errc::bad_shape:
        return true;
    default:
        return false;
    }
}

} // namespace cxbench
