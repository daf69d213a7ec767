#ifndef DIRACSC_ERRORS_HPP
#define DIRACSC_ERRORS_HPP

#include <stdexcept>
#include <string>

#include "diracsc/types.hpp"

namespace diracsc {

// Exit codes used by the CLI; library exceptions map onto these.
enum ExitCode {
  exit_ok = 0,
  exit_config_error = 2,
  exit_integration_failure = 3,
  exit_caustic_error = 4,
  exit_orbit_search_failure = 5,
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key_path, const std::string& what)
      : std::runtime_error("config error at '" + key_path + "': " + what),
        key_path_(key_path) {}
  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

/// Step-size underflow or non-finite state; carries the last good state.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double t_last, PhaseState last)
      : std::runtime_error(what), t_last_(t_last), last_(last) {}
  double t_last() const { return t_last_; }
  const PhaseState& last_state() const { return last_; }

 private:
  double t_last_;
  PhaseState last_;
};

/// Endpoint conjugate to the initial point: Van Vleck amplitude diverges.
class CausticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OrbitSearchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Active gauge amplitude below threshold while tracking the spin phase.
class GaugePoleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace diracsc

#endif
