#pragma once

// Batch and online nonnegative matrix factorization under the Itakura-Saito
// divergence, with audio power-spectrogram ingestion and an evaluation
// harness. Header-only; requires Eigen.

#include "isnmf/audio.hpp"
#include "isnmf/batch.hpp"
#include "isnmf/errors.hpp"
#include "isnmf/harness.hpp"
#include "isnmf/io.hpp"
#include "isnmf/kernels.hpp"
#include "isnmf/matrix.hpp"
#include "isnmf/model.hpp"
#include "isnmf/online.hpp"
#include "isnmf/report.hpp"
#include "isnmf/rng.hpp"
