"""fairknn: exact multi-attribute group-fair k-NN over vector datasets.

Retrieval partitions the dataset by intersectional attribute bitmap,
probes per-partition LSH tables for only the partitions a query's
constraints make relevant, and hands the pooled candidates to an exact
combinatorial selector (sort / min-cost flow / branch-and-bound) that
returns k results whose per-attribute value counts match the requested
targets exactly, at minimum total distance among candidates.
"""
from .bench import ExperimentConfig, Metrics, load_config, parse_config, run_experiment
from .bitmaps import (BitLayout, MalformedBitmapError, QueryMask, build_registry,
                      decode_partition, encode_partial, encode_partition, partition_rows,
                      query_mask, quota, registry_from_matrix, relevant_partitions)
from .core import (AttributeSchema, DistanceKind, FairnessSpec, Query, VectorRecord,
                   distance, distances)
from .datasets import (Dataset, DatasetFormatError, count_feasible, export_binary,
                       export_csv, from_records, ingest, ingest_binary, ingest_csv,
                       knn_ids, load_queries, save, save_queries)
from .fairselect import (FEASIBLE, INFEASIBLE, RESOURCE_EXHAUSTED, SelectionProblem,
                         SelectionResult, VerifyReport, Violation, oracle_enumerate,
                         select_1attr, select_2attr, select_3plus, select_fair, verify)
from .generators import gen_3dm, gen_queries, gen_synthetic
from .index_io import FairIndex, IndexFormatError, build_index, load_index, save_index
from .lsh import (DerivedParams, HashFamily, LshParams, PartitionLsh, angular_collision,
                  build_partition_lsh, collision_bounds, compound_hash, derive_params,
                  make_family, probe, pstable_collision)
from .pipeline import GroundTruth, MethodResult, answer_query
from .retrieval import Candidate, PartitionProbe, RetrievalReport, near_neighbor, near_pi

__version__ = "0.1.0"
