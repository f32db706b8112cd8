#pragma once

#include "errors.hpp"
#include "random.hpp"
#include "parallel.hpp"
#include "stats.hpp"
#include "flows.hpp"
#include "warp.hpp"
#include "align.hpp"
#include "measures.hpp"
#include "entropy.hpp"
