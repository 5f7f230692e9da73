#pragma once
// Umbrella header for the core library. The HTTP service lives in
// kgmatch/service.hpp and is left out deliberately: it pulls in a large
// socket layer that most translation units have no use for.

#include "kgmatch/canonical.hpp"
#include "kgmatch/eval.hpp"
#include "kgmatch/features.hpp"
#include "kgmatch/gcn.hpp"
#include "kgmatch/graph.hpp"
#include "kgmatch/io.hpp"
#include "kgmatch/knn.hpp"
#include "kgmatch/matcher.hpp"
#include "kgmatch/synth.hpp"
#include "kgmatch/train.hpp"
