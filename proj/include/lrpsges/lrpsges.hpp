#ifndef LRPSGES_LRPSGES_HPP
#define LRPSGES_LRPSGES_HPP

#include "lrpsges/errors.hpp"
#include "lrpsges/rng.hpp"
#include "lrpsges/matcore.hpp"
#include "lrpsges/lrps.hpp"
#include "lrpsges/graphs.hpp"
#include "lrpsges/ges.hpp"
#include "lrpsges/ida.hpp"
#include "lrpsges/simsem.hpp"
#include "lrpsges/tune_eval.hpp"
#include "lrpsges/parallel.hpp"
#include "lrpsges/io.hpp"

#endif  // LRPSGES_LRPSGES_HPP
