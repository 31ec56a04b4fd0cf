"""Exception hierarchy shared across the package."""


class MaskRepairError(Exception):
    """Base class for every error raised by maskrepair."""


class UnknownLabel(MaskRepairError):
    def __init__(self, label_id):
        super().__init__(f"label {label_id} is not declared in the organ schema")
        self.label_id = label_id


class DimensionMismatch(MaskRepairError, ValueError):
    pass


class OverlapConflict(MaskRepairError):
    def __init__(self, voxel, organ_a, organ_b):
        super().__init__(f"voxel {tuple(voxel)} claimed by both {organ_a!r} and {organ_b!r}")
        self.voxel = tuple(voxel)
        self.organ_a = organ_a
        self.organ_b = organ_b


class EmptyMask(MaskRepairError, ValueError):
    pass


class OutOfBounds(MaskRepairError, IndexError):
    pass


class SchemaError(MaskRepairError, ValueError):
    pass


class ConfigError(MaskRepairError, ValueError):
    pass


class UnknownOrgan(SchemaError):
    pass


class UnknownStep(ConfigError):
    pass


class MissingLiver(SchemaError):
    pass


# NIfTI ---------------------------------------------------------------------

class NiftiError(MaskRepairError):
    pass


class CorruptHeader(NiftiError):
    pass


class UnsupportedDatatype(NiftiError):
    pass


class ScaledLabelData(NiftiError):
    pass


class NonIntegerData(NiftiError):
    pass


class LabelOverflow(NiftiError, ValueError):
    pass


class IoError(NiftiError, OSError):
    pass


# synthetic data --------------------------------------------------------------

class DimsTooSmall(MaskRepairError, ValueError):
    pass


class RecipeInfeasible(MaskRepairError):
    pass
