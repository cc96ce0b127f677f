#pragma once

#include <stdexcept>
#include <string>

namespace unirel {

// Error classes map to distinct CLI exit codes.
enum class Errc {
  Contract,  // precondition / invariant violation
  Config,    // bad configuration or arguments
  Io,        // filesystem / parse failures
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

inline Error contract_error(const std::string& what) { return Error(Errc::Contract, what); }
inline Error config_error(const std::string& what) { return Error(Errc::Config, what); }
inline Error io_error(const std::string& what) { return Error(Errc::Io, what); }

}  // namespace unirel
