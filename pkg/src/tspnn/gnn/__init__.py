"""Graph neural network edge classifiers for shortest paths and TSP tours."""
from .graph import (GraphBatch, GraphSample, dijkstra_path, make_shortest_path_dataset,
                    make_tsp_dataset, split)
from .mlp import MlpParams, build_mlp, mlp_backward, mlp_forward
from .model import (GnnParams, attention_coefficients, backward, forward, forward_edge_logits,
                    forward_node_logits, init_params, message_passing_round, node_update,
                    supervised_loss, zero_params)
from .train import TrainConfig, TrainReport, edge_metrics, train_edge_classifier

__all__ = [
    "GraphBatch", "GraphSample", "dijkstra_path", "make_shortest_path_dataset",
    "make_tsp_dataset", "split", "MlpParams", "build_mlp", "mlp_backward", "mlp_forward",
    "GnnParams", "attention_coefficients", "backward", "forward", "forward_edge_logits",
    "forward_node_logits", "init_params", "message_passing_round", "node_update",
    "supervised_loss", "zero_params", "TrainConfig", "TrainReport", "edge_metrics",
    "train_edge_classifier",
]
