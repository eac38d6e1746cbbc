from dataclasses import dataclass

# SI reference values, for runs outside natural units.
HBAR_SI = 1.054571817e-34
G_SI = 6.67430e-11
KB_SI = 1.380649e-23


@dataclass(frozen=True)
class UnitConstants:
    """Physical constants used by every builder and closed form.

    The default is natural units (hbar = G = kB = 1). ``G = 0`` is allowed so
    that gravitational coupling can be switched off.
    """

    hbar: float = 1.0
    G: float = 1.0
    kB: float = 1.0

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError(f"hbar must be > 0, got {self.hbar}")
        if not self.kB > 0:
            raise ValueError(f"kB must be > 0, got {self.kB}")
        if not self.G >= 0:
            raise ValueError(f"G must be >= 0, got {self.G}")

    @classmethod
    def si(cls) -> "UnitConstants":
        return cls(hbar=HBAR_SI, G=G_SI, kB=KB_SI)


NATURAL = UnitConstants()
