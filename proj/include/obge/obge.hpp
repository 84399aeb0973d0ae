/*
 *  Copyright 2026 The OBGE Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include "obge/ahu.hpp"
#include "obge/attack.hpp"
#include "obge/audit.hpp"
#include "obge/bench.hpp"
#include "obge/bytes.hpp"
#include "obge/crypto.hpp"
#include "obge/error.hpp"
#include "obge/gkt.hpp"
#include "obge/graph.hpp"
#include "obge/net.hpp"
#include "obge/oram_tree.hpp"
#include "obge/path_oram.hpp"
#include "obge/protocol.hpp"
#include "obge/recursive_oram.hpp"
#include "obge/stats.hpp"
#include "obge/trace.hpp"
#include "obge/wire.hpp"
