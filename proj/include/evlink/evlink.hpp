#pragma once

#include "evlink/clustering.hpp"
#include "evlink/corpus.hpp"
#include "evlink/embeddings.hpp"
#include "evlink/errors.hpp"
#include "evlink/metrics.hpp"
#include "evlink/nn.hpp"
#include "evlink/pairs.hpp"
#include "evlink/pipeline.hpp"
#include "evlink/random.hpp"
#include "evlink/scorers.hpp"
