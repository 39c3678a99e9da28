// odkit.hpp - umbrella header for the whole toolkit.
#pragma once

#include "csv.hpp"
#include "dataset.hpp"
#include "detector.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "kdtree.hpp"
#include "matrix.hpp"
#include "meanshift.hpp"
#include "metrics.hpp"
#include "nn.hpp"
#include "rng.hpp"
#include "synth.hpp"
