#pragma once

// Umbrella header.

#include "advneg/bm25.hpp"
#include "advneg/corpus.hpp"
#include "advneg/digest.hpp"
#include "advneg/embedding.hpp"
#include "advneg/error.hpp"
#include "advneg/generation.hpp"
#include "advneg/infill.hpp"
#include "advneg/keywords.hpp"
#include "advneg/masking.hpp"
#include "advneg/metrics.hpp"
#include "advneg/negatives.hpp"
#include "advneg/ngram.hpp"
#include "advneg/pipeline.hpp"
#include "advneg/remote.hpp"
#include "advneg/rng.hpp"
#include "advneg/sampling.hpp"
#include "advneg/scoring.hpp"
#include "advneg/text.hpp"
