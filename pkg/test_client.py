#!/usr/bin/env python3
"""
Smoke client for a running Lorentzian Varifold API
Exercises every endpoint against a live server (python main.py)
"""

import asyncio
import json
import sys
from typing import Dict, Any
import httpx
from decouple import config

# Test configuration
BASE_URL = config("LORVAR_API_URL", default="http://localhost:8000")

KINK_RUN = {
    "experiment": "string-run",
    "builtin": "kink",
    "t1": 0.5,
    "grid_dt": 0.05,
    "grid_du": 0.1,
    "refinements": 2,
    "family_scales": [1, 2],
}


class LorentzianVarifoldClient:
    def __init__(self, base_url: str = BASE_URL):
        self.base_url = base_url
        self.client = httpx.AsyncClient(timeout=120.0)
        self.failures = 0

    async def close(self):
        await self.client.aclose()

    async def _call(self, label: str, method: str, path: str, **kwargs) -> Dict[str, Any]:
        print(f"🔍 {label}...")
        try:
            response = await self.client.request(method, f"{self.base_url}{path}", **kwargs)
            result = response.json()
            if response.status_code >= 400:
                self.failures += 1
                print(f"❌ {label}: HTTP {response.status_code} {result.get('detail')}")
            else:
                print(f"✅ {label}")
            return result
        except Exception as e:
            self.failures += 1
            print(f"❌ {label} failed: {e}")
            return {"error": str(e)}

    async def check_geometry(self):
        result = await self._call("Classify (1, 0.5)", "POST", "/minkowski/classify", json={"vector": [1.0, 0.5]})
        print(f"   Kind: {result.get('kind')}, square: {result.get('square')}")
        result = await self._call("Project span{(1, 0.6)}", "POST", "/minkowski/project", json={"basis": [[1.0, 0.6]]})
        print(f"   P: {result.get('projection')}")

    async def check_junctions(self):
        result = await self._call("Solve (4, 1, 1)", "POST", "/junctions/solve",
                                  json={"theta1": 4, "theta2": 1, "theta3": 1})
        solutions = result.get("solutions", [])
        if solutions:
            print(f"   alpha = {solutions[0]['alpha']:.12f}, beta = {solutions[0]['beta']:.12f}")
            network = {
                "p": [0.0, 0.0],
                "lines": [
                    {"dir": [1.0, 0.0], "theta": 4.0, "orientation": "in"},
                    {"dir": [1.0, -1.0 / 2.0], "theta": 1.0, "orientation": "out"},
                    {"dir": [1.0, 1.0 / 2.0], "theta": 1.0, "orientation": "out"},
                ],
            }
            result = await self._call("Balance of an unbalanced speed-1/2 splitting", "POST", "/junctions/balance", json=network)
            print(f"   E before/after: {result.get('energy_before')} / {result.get('energy_after')}, "
                  f"conserved: {result.get('conserved')}")

    async def check_varifold_upload(self):
        atoms = [{"z": [str(0.02 * (i + 0.5)), "0"], "kind": "timelike", "weight": "0.02",
                  "matrix": [["1", "0"], ["0", "0"]]} for i in range(50)]
        payload = json.dumps({"h": 1, "N": 1, "provenance": "static line", "atoms": atoms})
        files = {"file": ("line.json", payload, "application/json")}
        result = await self._call("Summarize an uploaded varifold", "POST", "/varifolds/summary", files=files)
        print(f"   Atoms: {result.get('atoms')}, total mass: {result.get('total_mass')}")
        result = await self._call("Stationarity of the upload", "POST", "/varifolds/stationarity",
                                  files=files, data={"scales": "1,2"})
        print(f"   Residual: {result.get('residual')}")

    async def check_experiments(self):
        result = await self._call("List experiments", "GET", "/experiments/")
        print(f"   {', '.join(result.get('experiments', []))}")
        report = await self._call("Run a small kink string-run", "POST", "/experiments/run", json=KINK_RUN)
        for check in report.get("checks", []):
            mark = "✅" if check["passed"] else "❌"
            print(f"   {mark} {check['name']}: {check['value']:.3e}")

    async def run_all_checks(self):
        print("🧪 Lorentzian Varifold API Smoke Test")
        print("=" * 50)

        try:
            await self._call("Health check", "GET", "/health")
            await self._call("Root endpoint", "GET", "/")
            await self.check_geometry()
            await self.check_junctions()
            await self.check_varifold_upload()
            await self.check_experiments()

            if self.failures:
                print(f"\n❌ {self.failures} request(s) failed")
            else:
                print("\n✅ All requests completed successfully!")
        finally:
            await self.close()


async def main():
    """Main smoke runner"""
    # Check if server is running
    try:
        async with httpx.AsyncClient() as client:
            response = await client.get(f"{BASE_URL}/health", timeout=5.0)
            if response.status_code != 200:
                print(f"❌ Server not responding properly: {response.status_code}")
                sys.exit(1)
    except Exception as e:
        print(f"❌ Cannot connect to server at {BASE_URL}")
        print(f"   Error: {e}")
        print("   Please start the server with: python main.py")
        sys.exit(1)

    smoke = LorentzianVarifoldClient()
    await smoke.run_all_checks()
    sys.exit(1 if smoke.failures else 0)


if __name__ == "__main__":
    asyncio.run(main())
