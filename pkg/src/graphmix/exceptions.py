"""Exception types raised across the package."""


class GraphMixError(Exception):
    """Base class for all package errors."""


class IsolatedNode(GraphMixError):
    def __init__(self, node_id):
        super().__init__(f"node {node_id} has no neighbors and self-loops are disabled")
        self.node_id = node_id


class InvalidGraph(GraphMixError, ValueError):
    pass


class BundleError(GraphMixError):
    """Problem with an on-disk graph bundle; names the file and line when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class MissingFile(BundleError):
    pass


class ParseError(BundleError):
    pass


class IndexOutOfRange(BundleError):
    pass


class ClassOutOfRange(BundleError):
    pass


class InfeasibleSplit(GraphMixError, ValueError):
    pass


class NonFiniteInput(GraphMixError, ValueError):
    pass


class ShapeMismatch(GraphMixError, ValueError):
    pass


class TapeConsumed(GraphMixError, RuntimeError):
    pass


class DegenerateInput(GraphMixError, ValueError):
    pass


class UnsupportedKind(GraphMixError, ValueError):
    pass


class NoCoveredNodes(GraphMixError, ValueError):
    pass


class EmptyTrainSet(GraphMixError, ValueError):
    pass


class MissingAdjacency(GraphMixError, ValueError):
    pass


class NonFiniteLoss(GraphMixError, FloatingPointError):
    def __init__(self, epoch):
        super().__init__(f"non-finite training loss at epoch {epoch}")
        self.epoch = epoch


class EmptyMask(GraphMixError, ValueError):
    pass


class InvalidLayer(GraphMixError, ValueError):
    pass


class NotTwoDimensional(GraphMixError, ValueError):
    pass
