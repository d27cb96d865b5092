"""Package ddgcn.

Graph-supervised multi-label classification for differential diagnosis:
label graphs, a two-layer GCN classifier head, multi-label metrics and
node-proximity analysis.
"""
