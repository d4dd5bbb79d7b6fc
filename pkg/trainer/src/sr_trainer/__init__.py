"""Reference external evaluator for the architecture-search wire protocol:
rebuilds exported compute graphs as torch networks, runs short training,
and replies with PSNR/MSE one JSON line at a time.
"""

from .graph_net import GraphNetwork, build_network
from .training import TrainResult, bicubic_psnr, run_request

__version__ = "0.1.0"
