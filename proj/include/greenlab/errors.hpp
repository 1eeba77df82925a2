#pragma once

#include <stdexcept>
#include <string>

namespace greenlab
{
//! Failure categories raised by the library.
enum class ErrorKind
{
    zero_vector,
    degenerate_image,
    degenerate_map,
    solver_divergence,
    budget_exceeded,
    no_convergence,
    exceptional_base,
    singular_hit,
    invalid_spec,
    degenerate_variance,
    config_error,
    io_error,
};

const char* to_string(ErrorKind kind);

//! Base exception; carries a kind so callers can dispatch without RTTI.
class Error : public std::runtime_error
{
  public:
    Error(ErrorKind kind, std::string const& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what)
        , kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

#define GREENLAB_DEFINE_ERROR(NAME, KIND)                  \
    class NAME : public Error                              \
    {                                                      \
      public:                                              \
        explicit NAME(std::string const& what)             \
            : Error(ErrorKind::KIND, what)                 \
        {                                                  \
        }                                                  \
    }

GREENLAB_DEFINE_ERROR(ZeroVector, zero_vector);
GREENLAB_DEFINE_ERROR(DegenerateImage, degenerate_image);
GREENLAB_DEFINE_ERROR(DegenerateMap, degenerate_map);
GREENLAB_DEFINE_ERROR(SolverDivergence, solver_divergence);
GREENLAB_DEFINE_ERROR(BudgetExceeded, budget_exceeded);
GREENLAB_DEFINE_ERROR(NoConvergence, no_convergence);
GREENLAB_DEFINE_ERROR(ExceptionalBase, exceptional_base);
GREENLAB_DEFINE_ERROR(SingularHit, singular_hit);
GREENLAB_DEFINE_ERROR(InvalidSpec, invalid_spec);
GREENLAB_DEFINE_ERROR(DegenerateVariance, degenerate_variance);
GREENLAB_DEFINE_ERROR(ConfigError, config_error);
GREENLAB_DEFINE_ERROR(IOError, io_error);

#undef GREENLAB_DEFINE_ERROR

}  // namespace greenlab
