#pragma once

#include "common.hpp"
#include "corpus.hpp"
#include "lsh.hpp"
#include "oracle.hpp"
#include "random.hpp"
#include "rational.hpp"
#include "sketch.hpp"
#include "stats.hpp"
#include "theory.hpp"
