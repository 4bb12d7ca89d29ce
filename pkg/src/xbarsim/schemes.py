"""Named combinations of weight encoding, cell programming and current compensation."""

from dataclasses import dataclass

from .device import ProgrammingScheme
from .encode import EncodingKind
from .xbar import Compensation


@dataclass(frozen=True)
class SchemeStack:
    name: str
    encoding: EncodingKind
    programming: ProgrammingScheme
    compensation: Compensation

    def __post_init__(self):
        object.__setattr__(self, "encoding", EncodingKind(self.encoding))
        object.__setattr__(self, "programming", ProgrammingScheme(self.programming))
        object.__setattr__(self, "compensation", Compensation(self.compensation))

    def to_dict(self):
        return {
            "name": self.name,
            "encoding": self.encoding.value,
            "programming": self.programming.value,
            "compensation": self.compensation.value,
        }


PRESETS = {
    s.name: s
    for s in (
        SchemeStack("conventional", EncodingKind.CONVENTIONAL, ProgrammingScheme.PROPORTIONAL,
                    Compensation.NONE),
        SchemeStack("iac", EncodingKind.CONVENTIONAL, ProgrammingScheme.PROPORTIONAL,
                    Compensation.IAC_SUBTRACT),
        SchemeStack("offset", EncodingKind.CONVENTIONAL, ProgrammingScheme.OFFSET_COMPENSATED,
                    Compensation.VECOM_SUBTRACT),
        SchemeStack("vecom_encoding", EncodingKind.VECOM, ProgrammingScheme.PROPORTIONAL,
                    Compensation.NONE),
        SchemeStack("vecom", EncodingKind.VECOM, ProgrammingScheme.OFFSET_COMPENSATED,
                    Compensation.VECOM_SUBTRACT),
    )
}


def resolve(scheme):
    """Accept a preset name, a ``SchemeStack`` or a dict with the three fields."""
    if isinstance(scheme, SchemeStack):
        return scheme
    if isinstance(scheme, str):
        try:
            return PRESETS[scheme]
        except KeyError:
            raise ValueError(f"unknown scheme {scheme!r}; presets: {sorted(PRESETS)}") from None
    if isinstance(scheme, dict):
        missing = {"encoding", "programming", "compensation"} - set(scheme)
        if missing:
            raise ValueError(f"scheme is missing {sorted(missing)}")
        name = scheme.get("name") or "{encoding}+{programming}+{compensation}".format(**scheme)
        return SchemeStack(name, scheme["encoding"], scheme["programming"], scheme["compensation"])
    raise TypeError(f"cannot interpret scheme {scheme!r}")
