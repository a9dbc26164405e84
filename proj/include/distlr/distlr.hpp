#pragma once

#include <distlr/chebyshev.hpp>
#include <distlr/divergence.hpp>
#include <distlr/errors.hpp>
#include <distlr/families.hpp>
#include <distlr/hmatrix.hpp>
#include <distlr/lowrank.hpp>
#include <distlr/partition.hpp>
#include <distlr/separated.hpp>
#include <distlr/serialize.hpp>

namespace distlr {
inline constexpr const char *version = "0.1.0";
}
