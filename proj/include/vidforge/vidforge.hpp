#pragma once

#include "vidforge/annotator.hpp"
#include "vidforge/caption_engine.hpp"
#include "vidforge/dataset_assembly.hpp"
#include "vidforge/media_ingest.hpp"
#include "vidforge/pipeline.hpp"
#include "vidforge/qa_engine.hpp"
#include "vidforge/repplan.hpp"
#include "vidforge/scene_dynamics.hpp"
#include "vidforge/synthetic.hpp"
