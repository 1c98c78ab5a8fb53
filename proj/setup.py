"""Build the _staggered_ife extension by delegating to the project's CMake.

The usual pybind11 cmake-bridge setup: configure into build_temp, build just
the module target, and copy the resulting .so where setuptools expects it.
Editable installs additionally drop the module into the source package so the
in-tree import works.
"""

import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        cfg = "Debug" if self.debug else "Release"
        subprocess.run(
            [
                "cmake",
                "-S", str(source_dir),
                "-B", str(build_dir),
                f"-DCMAKE_BUILD_TYPE={cfg}",
                "-DBUILD_PYTHON_BINDINGS=ON",
                f"-DPython3_EXECUTABLE={sys.executable}",
            ],
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_staggered_ife", "--parallel"],
            check=True,
        )

        built = sorted((build_dir / "python" / "staggered_ife").glob("_staggered_ife*"))
        built = [p for p in built if p.suffix in (".so", ".pyd")]
        if not built:
            raise RuntimeError("cmake build did not produce the _staggered_ife module")

        target = Path(self.get_ext_fullpath(ext.name)).resolve()
        target.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built[0], target)

        if getattr(self, "editable_mode", False) or self.inplace:
            shutil.copy2(built[0], source_dir / "python" / "staggered_ife" / built[0].name)


setup(
    ext_modules=[CMakeExtension("staggered_ife._staggered_ife")],
    cmdclass={"build_ext": CMakeBuild},
)
