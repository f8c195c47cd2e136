#pragma once

#include "stagevis/campaign.hpp"
#include "stagevis/corpus.hpp"
#include "stagevis/error.hpp"
#include "stagevis/eval.hpp"
#include "stagevis/generate.hpp"
#include "stagevis/html.hpp"
#include "stagevis/index.hpp"
#include "stagevis/optimize.hpp"
#include "stagevis/report.hpp"
#include "stagevis/rerank.hpp"
#include "stagevis/text.hpp"
#include "stagevis/webdoc.hpp"
