#include "diffgmm/errors.hpp"

namespace diffgmm {

void throw_contract(const std::string& what) { throw ContractError(what); }

void throw_shape(const std::string& what) { throw ShapeError(what); }

}  // namespace diffgmm
