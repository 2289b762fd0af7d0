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

//! Weighted topic co-occurrence networks built from document corpora.

pub mod community;
pub mod corpus;
pub mod error;
pub mod graphbuild;
pub mod metrics;
pub mod nulls;
pub mod pipeline;
pub mod scoring;
pub mod synthetic;
pub mod temporal;

pub use error::{Error, Result};
