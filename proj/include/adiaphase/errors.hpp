#pragma once

#include <stdexcept>
#include <string>

namespace adiaphase {

// Error taxonomy. The CLI maps these onto exit codes:
//   input/parse -> 2, tracking/degeneracy -> 3, numerical checks -> 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// -- linear algebra ---------------------------------------------------------
struct SingularMatrix : Error {
    using Error::Error;
};
struct NearDegenerate : Error {
    using Error::Error;
};
struct NoConvergence : Error {
    using Error::Error;
};
struct DefectivePair : Error {
    using Error::Error;
};

// -- spectral tracking ------------------------------------------------------
struct TrackingLost : Error {
    using Error::Error;
};
struct ContourMisplaced : Error {
    using Error::Error;
};
struct SingularResolvent : Error {
    using Error::Error;
};

// -- models / config --------------------------------------------------------
struct ParseError : Error {
    ParseError(const std::string& msg, int line, int column)
        : Error(msg + " (line " + std::to_string(line) + ", column " +
                std::to_string(column) + ")"),
          line(line), column(column) {}
    int line;
    int column;
};
struct UnknownModelKind : Error {
    using Error::Error;
};
struct DissipativityViolation : Error {
    using Error::Error;
};

// -- propagation / phases ---------------------------------------------------
struct StepUnderflow : Error {
    using Error::Error;
};
struct SectionSingular : Error {
    using Error::Error;
};
struct CrossCheckFailed : Error {
    using Error::Error;
};

}  // namespace adiaphase
