#pragma once

#include <stdexcept>
#include <string>

namespace rarecell {

// Malformed or semantically invalid input data (grid files, masks, CSV).
// The CLI maps this family to exit code 2.
class data_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Parse failure in a text input; message names line and column where possible.
class parse_error : public data_error {
public:
    using data_error::data_error;
};

// A computation that cannot produce a result: unfittable sweep, empty
// conditional ensemble, and similar. The CLI maps this to exit code 3.
class numerical_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}
