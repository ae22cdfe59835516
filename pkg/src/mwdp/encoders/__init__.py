"""Reductions from TSP and minimum set cover to layered DP instances."""

from .msc import NO_COVER, MscInstance, brute_force_msc, decode_msc, encode_msc, load_msc, random_msc, save_msc
from .tsp import TspGraph, brute_force_tsp, decode_tsp, encode_tsp, load_graph, random_graph, save_graph, value_to_cost
