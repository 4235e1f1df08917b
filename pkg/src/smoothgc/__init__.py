"""Attributed graph clustering with depth-adaptive low-pass graph convolution.

The library filters node features with a low-pass graph operator, lets a
recurrent saturation sensor decide per node (or per graph) how many filter
orders to apply, fuses the weighted layers into representations, and
partitions them with spectral clustering.  Training is self-supervised from
intra-cluster tightness and inter-cluster separation.
"""

from .config import TrainConfig, read_config
from .data import (RunReport, dataset_fingerprint, generate_sbm,
                   load_citation_dataset, read_report, two_clique_fixture,
                   write_citation_dataset, write_report)
from .errors import (CollapseError, ConfigError, ConvergenceError,
                     DataFormatError, SingletonClusterError, SmoothgcError)
from .graph import (AttributedGraph, FilteredSignalStack, LayerSource,
                    apply_filter, build_graph, filtered_stack,
                    normalized_smoothness, smoothness, stream_layers)
from .metrics import (LabelAlignment, align_labels, clustering_accuracy,
                      evaluate, macro_f1, nmi)
from .sensor import (HaltingSchedule, NodeSchedule, SensorParams, cell_step,
                     fixed_k_representation, fuse_representation, halt_prob,
                     init_params, run_sensor_all, run_sensor_graph,
                     run_sensor_node, saturation_schedule)
from .spectral import (ClusterPartition, cluster, kmeans, linear_kernel,
                       spectral_embedding, symmetrize, top_eigenvectors)
from .training import (AdamState, adam_step, auto_select_proportion, backward,
                       combined_loss, loss_separation, loss_tightness,
                       node_separation, node_tightness, pairwise_distances,
                       should_stop, train)

__version__ = "0.1.0"
