#pragma once

#include "mmelab/atlas.hpp"
#include "mmelab/config.hpp"
#include "mmelab/cycles.hpp"
#include "mmelab/errors.hpp"
#include "mmelab/experiment.hpp"
#include "mmelab/measure.hpp"
#include "mmelab/parallel.hpp"
#include "mmelab/polynomial.hpp"
#include "mmelab/rational_map.hpp"
#include "mmelab/rays.hpp"
#include "mmelab/render.hpp"
#include "mmelab/rng.hpp"
#include "mmelab/sampler.hpp"
#include "mmelab/sphere.hpp"
