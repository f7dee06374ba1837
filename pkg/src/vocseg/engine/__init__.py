from .executor import GraphExecutionError, GraphRunner
from .proto import Graph, Node, OnnxFormatError, TensorInfo, load_model, save_model

__all__ = [
    "Graph",
    "GraphExecutionError",
    "GraphRunner",
    "Node",
    "OnnxFormatError",
    "TensorInfo",
    "load_model",
    "save_model",
]
