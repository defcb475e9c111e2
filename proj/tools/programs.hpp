#pragma once

#include <map>
#include <string>

#include "dart/runtime.hpp"

namespace pgas {

struct Builtin {
  std::string description;
  dart::Program program;
};

/// Demo and self-check kernels runnable through `pgas run`.
const std::map<std::string, Builtin>& builtin_programs();

}  // namespace pgas
