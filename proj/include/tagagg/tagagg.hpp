#pragma once

#include "tagagg/aggregate.hpp"
#include "tagagg/bea.hpp"
#include "tagagg/corpus_io.hpp"
#include "tagagg/digamma.hpp"
#include "tagagg/error.hpp"
#include "tagagg/labels.hpp"
#include "tagagg/metrics.hpp"
#include "tagagg/rare.hpp"
#include "tagagg/report.hpp"
#include "tagagg/spans.hpp"
#include "tagagg/synth.hpp"
#include "tagagg/vote.hpp"
