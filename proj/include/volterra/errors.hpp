#pragma once

#include <stdexcept>
#include <string>

namespace volterra {

// Every library failure carries a stable name used by the CLI diagnostics.
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& what)
      : std::runtime_error(name + ": " + what), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

#define VOLTERRA_ERROR(Name)                                          \
  struct Name : Error {                                               \
    explicit Name(const std::string& what) : Error(#Name, what) {}    \
  }

VOLTERRA_ERROR(SingularAtOrigin);
VOLTERRA_ERROR(NonPositiveTime);
VOLTERRA_ERROR(GridTooCoarse);
VOLTERRA_ERROR(NegativeKernel);
VOLTERRA_ERROR(HypothesisViolated);
VOLTERRA_ERROR(GridMismatch);
VOLTERRA_ERROR(OutOfDomain);
VOLTERRA_ERROR(WeightNotAdmissible);
VOLTERRA_ERROR(UnstableConfig);
VOLTERRA_ERROR(MissingLift);
VOLTERRA_ERROR(IncrementMissing);
VOLTERRA_ERROR(NonlinearDrift);
VOLTERRA_ERROR(UnsupportedKernel);
VOLTERRA_ERROR(InitialCurveNotRepresentable);
VOLTERRA_ERROR(CouplingMismatch);
VOLTERRA_ERROR(CoefficientsNotDifferentiable);
VOLTERRA_ERROR(HurstBelowThreshold);
VOLTERRA_ERROR(ModelNotCompliant);
VOLTERRA_ERROR(DegenerateStencil);
VOLTERRA_ERROR(NestedBudgetExceeded);
VOLTERRA_ERROR(TestFunctionNotCompliant);
VOLTERRA_ERROR(InvalidArgument);

#undef VOLTERRA_ERROR

}  // namespace volterra
