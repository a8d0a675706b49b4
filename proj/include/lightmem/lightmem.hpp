#pragma once

#include "lightmem/config.hpp"
#include "lightmem/consolidator.hpp"
#include "lightmem/core.hpp"
#include "lightmem/embedding.hpp"
#include "lightmem/engine.hpp"
#include "lightmem/gateway.hpp"
#include "lightmem/ltm_graph.hpp"
#include "lightmem/metrics.hpp"
#include "lightmem/mock_models.hpp"
#include "lightmem/persistence.hpp"
#include "lightmem/planner.hpp"
#include "lightmem/retrieval.hpp"
#include "lightmem/service.hpp"
#include "lightmem/vector_index.hpp"
#include "lightmem/writer.hpp"
