#pragma once

#include <stdexcept>
#include <string>

namespace rigidform {

// Bad or inconsistent user configuration (unknown keys, out-of-range values,
// unknown curve family). The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// No regular parameter with a defined tangent near the requested one.
class SingularPoint : public std::runtime_error {
 public:
  explicit SingularPoint(const std::string& what) : std::runtime_error(what) {}
};

// Damped normal equations could not be factored even at the largest damping.
class NormalEquationsSingular : public std::runtime_error {
 public:
  explicit NormalEquationsSingular(const std::string& what) : std::runtime_error(what) {}
};

// Two agents occupy the same point; the avoidance potential is undefined.
class CollisionFault : public std::runtime_error {
 public:
  explicit CollisionFault(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite state or control during integration.
class SimulationAbort : public std::runtime_error {
 public:
  explicit SimulationAbort(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rigidform
