#pragma once

#include "aefe/aggregate.hpp"
#include "aefe/analysis.hpp"
#include "aefe/config.hpp"
#include "aefe/construct.hpp"
#include "aefe/dataset.hpp"
#include "aefe/error.hpp"
#include "aefe/feature_spec.hpp"
#include "aefe/fm.hpp"
#include "aefe/gbdt.hpp"
#include "aefe/logistic.hpp"
#include "aefe/metrics.hpp"
#include "aefe/pipeline.hpp"
#include "aefe/search.hpp"
#include "aefe/selection.hpp"
#include "aefe/serialize.hpp"
#include "aefe/synthetic.hpp"
