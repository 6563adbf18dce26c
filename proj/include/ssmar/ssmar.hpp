#pragma once

#include "ssmar/core.hpp"
#include "ssmar/density.hpp"
#include "ssmar/em.hpp"
#include "ssmar/fit.hpp"
#include "ssmar/inference.hpp"
#include "ssmar/io.hpp"
#include "ssmar/pipeline.hpp"
#include "ssmar/random.hpp"
#include "ssmar/sampler.hpp"
#include "ssmar/signal.hpp"
#include "ssmar/simgen.hpp"
#include "ssmar/statespace.hpp"
