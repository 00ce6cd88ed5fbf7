#pragma once

#include <stdexcept>
#include <string>

namespace spanreg {

// Failure taxonomy shared by all modules. Every library error derives from
// Error so callers can catch a single type; the CLI maps leaf types onto
// distinct exit codes (see tools/).
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shapes of operands disagree with each other or with a spec's (d, n).
struct DimensionMismatch : Error {
  using Error::Error;
};

// A spec is malformed: unknown kind, bad parameter range, unknown JSON key.
struct InvalidSpec : Error {
  using Error::Error;
};

// Symmetric argument has an eigenvalue below -tolerance.
struct NotPsd : Error {
  using Error::Error;
};

// Dimensions too small for the requested construction (e.g. d < 2n for the
// induced scalar form, or a vector space too small to rotate in).
struct DimsTooSmall : Error {
  using Error::Error;
};

// The regularizer has a gradient almost everywhere but not at this point.
struct NonDifferentiablePoint : Error {
  using Error::Error;
};

// The regularizer kind has no gradient anywhere (rank, partition penalties).
struct NotDifferentiableKind : Error {
  using Error::Error;
};

// Interpolation constraints admit no solution.
struct Infeasible : Error {
  using Error::Error;
};

// A construction requires a unique minimizer and the problem has none
// (flat minimum ray, or a zero minimizer where a nonzero one is needed).
struct NotUnique : Error {
  using Error::Error;
};

// rotation_between requires equal norms.
struct NormMismatch : Error {
  using Error::Error;
};

// A vector that must be nonzero is (numerically) zero.
struct ZeroVector : Error {
  using Error::Error;
};

// Argument is not special orthogonal (not orthogonal, or det = -1).
struct NotSpecialOrthogonal : Error {
  using Error::Error;
};

// Columns expected orthonormal are not (within tolerance).
struct NotOrthonormalInput : Error {
  using Error::Error;
};

// Path target direction overlaps the fixed singular directions.
struct NotOrthogonalToFrame : Error {
  using Error::Error;
};

// Matrix of rank zero where a leading singular direction is required.
struct RankZero : Error {
  using Error::Error;
};

// W^T P is not (numerically) zero where orthogonality is a precondition.
struct NotOrthogonal : Error {
  using Error::Error;
};

}  // namespace spanreg
