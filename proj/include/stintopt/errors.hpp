// Copyright 2026 The stintopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef STINTOPT_ERRORS_HPP_
#define STINTOPT_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stintopt {

/// Base class of every error raised by the library.
class StintError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad files, inconsistent dimensions, violated preconditions.
class InputError : public StintError {
 public:
  using StintError::StintError;
};

/// A lateral-limit denominator m*|kappa| - mu*downforce was non-positive at a
/// node and no straight-line cap bounds the speed there.
class DownforceUnboundedError : public StintError {
 public:
  explicit DownforceUnboundedError(std::size_t node)
      : StintError("downforce-unbounded corner at node " +
                   std::to_string(node)),
        node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

/// Kinetic energy reached zero during forward integration.
class StallError : public StintError {
 public:
  explicit StallError(double s)
      : StintError("vehicle stalled at s=" + std::to_string(s) + " m"), s_(s) {}
  double position() const { return s_; }

 private:
  double s_;
};

/// The deceleration needed to land on a kinetic-energy target exceeds the
/// combined regenerative and friction braking capability.
class InfeasibleBrakingError : public StintError {
 public:
  InfeasibleBrakingError(double s, double shortfall)
      : StintError("infeasible braking at s=" + std::to_string(s) +
                   " m, shortfall " + std::to_string(shortfall) + " N"),
        s_(s),
        shortfall_(shortfall) {}
  double position() const { return s_; }
  double shortfall() const { return shortfall_; }

 private:
  double s_;
  double shortfall_;
};

/// The optimal control problem has no solution. `family` names the
/// constraint family the infeasibility was attributed to.
class InfeasibleProblemError : public StintError {
 public:
  InfeasibleProblemError(std::string family, const std::string& detail)
      : StintError("infeasible problem (" + family + "): " + detail),
        family_(std::move(family)) {}
  const std::string& family() const { return family_; }

 private:
  std::string family_;
};

/// The conic solver stopped without a certificate (iteration limit,
/// numerical breakdown).
class SolverError : public StintError {
 public:
  using StintError::StintError;
};

}  // namespace stintopt

#endif  // STINTOPT_ERRORS_HPP_
