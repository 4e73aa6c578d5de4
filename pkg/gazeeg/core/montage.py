from typing import Dict, Iterable, List, Tuple
import numpy as np


class Montage:
    """Electrode positions on the unit sphere, keyed by 10-20 channel name."""

    def __init__(self, positions: Dict[str, Tuple[float, float, float]]):
        self._names = list(positions.keys())
        coords = np.asarray([positions[name] for name in self._names], dtype=np.float64)
        norms = np.linalg.norm(coords, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("Electrode positions must not be located at the sphere center.")
        self._coords = coords / norms

    @classmethod
    def from_spherical(cls, angles: Dict[str, Tuple[float, float]]) -> "Montage":
        """Build a montage from (inclination from vertex, azimuth) in degrees.

        Azimuth 0 points to the right ear, 90 to the nose.
        """
        positions = {}
        for name, (inclination, azimuth) in angles.items():
            theta = np.deg2rad(inclination)
            phi = np.deg2rad(azimuth)
            positions[name] = (np.sin(theta) * np.cos(phi),
                               np.sin(theta) * np.sin(phi),
                               np.cos(theta))
        return cls(positions)

    @property
    def names(self) -> List[str]:
        return list(self._names)

    def __contains__(self, name: str):
        return name in self._names

    def __len__(self):
        return len(self._names)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._coords[self._names.index(name)].copy()

    def positions(self, names: Iterable[str]) -> np.ndarray:
        """Unit vectors (n, 3) for the given channel names, in that order."""
        names = list(names)
        missing = [name for name in names if name not in self._names]
        if missing:
            raise KeyError("Montage has no position for channel(s) {}.".format(", ".join(missing)))
        return np.stack([self[name] for name in names])

    def subset(self, names: Iterable[str]) -> "Montage":
        names = list(names)
        return Montage(dict(zip(names, map(tuple, self.positions(names)))))

    def to_dict(self) -> Dict[str, List[float]]:
        return {name: [float(v) for v in self._coords[i]] for i, name in enumerate(self._names)}


class MontageManager:
    def __init__(self):
        # Spherical head model, Cz at the vertex, nose towards +y.
        self._montages = {
            'standard_1020': Montage.from_spherical({
                'Fp1': (92, 108), 'Fp2': (92, 72),
                'F7': (92, 144), 'F3': (60, 129), 'Fz': (46, 90), 'F4': (60, 51), 'F8': (92, 36),
                'T7': (92, 180), 'C3': (46, 180), 'Cz': (0, 0), 'C4': (46, 0), 'T8': (92, 0),
                'P7': (92, 216), 'P3': (60, 231), 'Pz': (46, 270), 'P4': (60, 309), 'P8': (92, 324),
                'O1': (92, 252), 'Oz': (92, 270), 'O2': (92, 288),
            }),
        }

    def register(self, identifier: str, montage: Montage, overwrite: bool = False):
        if identifier in self._montages and not overwrite:
            raise KeyError("Another montage with identifier '{}' is registered already.".format(identifier))
        self._montages[identifier] = montage

    def __getitem__(self, identifier: str) -> Montage:
        return self._montages[identifier]

    def __contains__(self, identifier: str):
        return identifier in self._montages

    def __str__(self):
        return ", ".join(self._montages.keys())


montages = MontageManager()

STANDARD_CHANNELS = montages['standard_1020'].names
