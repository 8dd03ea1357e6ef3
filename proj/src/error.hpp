#pragma once

#include <stdexcept>
#include <string>

namespace pspec {

enum class ErrKind {
  Parse,       // malformed program or assignment text
  Validate,    // structurally broken Program
  Input,       // assignment does not match the program's input spec
  Runtime,     // execution fault (bad address, fuel, ...)
  Budget,      // specialization state budget exhausted
  Congruence,  // division is not congruent (delayed write into supplied state)
  Internal,
};

struct Error : std::runtime_error {
  ErrKind kind;
  Error(ErrKind k, const std::string &msg) : std::runtime_error(msg), kind(k) {}
};

}  // namespace pspec
