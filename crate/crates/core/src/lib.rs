// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


//! Dynamic, locality-bounded, hierarchical Leiden community detection.

pub mod bench;
pub mod dynamics;
pub mod exec;
pub mod graph;
pub mod ingest;
pub mod leiden;
pub mod modularity;
pub mod oracle;
pub mod synth;
pub mod weight;

pub use dynamics::{BatchUpdate, DynamicsError, EdgeDelta, GroundUpdate, LiftedUpdate};
pub use exec::Exec;
pub use leiden::{decouple, DecouplePolicy, Engine, EngineError, Move, Params, Partition, StageReport, StepReport, Target};
pub use graph::{Aggregates, Entry, GraphError, HierGraph, NodeId, NodeKind, COMMUNITY_LEVEL};
pub use modularity::{modularity, ModularityError, Resolution};
pub use weight::Weight;
