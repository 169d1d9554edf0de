"""Bandwidth-limited throughput predictions for the shipped machine file.

Each propagation variant is characterized by a loop balance (bytes moved
per node update). Dividing the measured memory bandwidth for the matching
access pattern by that balance gives the achievable update rate when the
kernel is memory bound.
"""

from slbm import MachineModel, loop_balance, roofline

# run densities measured on the two benchmark geometries
R_CHANNEL = 0.0306
R_BED = 0.19


def table(machine, label, r):
    print(f"{label} (run density r = {r}):")
    print(f"  {'variant':<10} {'B/FLUP':>8} "
          + "".join(f"{f'{f} GHz':>12}" for f in machine.frequencies_ghz))
    for variant in ("os-nt", "os-nt-r", "aa", "aa-r", "aa-rp"):
        needs_r = variant not in ("os-nt", "aa")
        b_l = loop_balance(variant, r if needs_r else None).b_l
        rates = [roofline(machine, variant, b_l, f)
                 for f in machine.frequencies_ghz]
        print(f"  {variant:<10} {b_l:>8.1f} "
              + "".join(f"{rate:>12.1f}" for rate in rates))
    print()


def main():
    machine = MachineModel.from_json()
    machine.validate()
    print(f"machine: {machine.name}")
    print(f"cache line {machine.cacheline_bytes} B, "
          f"{machine.cores_per_domain} cores per memory domain")
    print("bandwidths (GB/s) by access pattern and clock:")
    for pattern, by_freq in sorted(machine.bandwidths_gbps.items()):
        cells = ", ".join(f"{f}: {bw}" for f, bw in sorted(by_freq.items()))
        print(f"  {pattern:<8} {cells}")
    print()
    table(machine, "channel", R_CHANNEL)
    table(machine, "fixed bed", R_BED)
    print("rates are MFLUP/s per memory domain. The in-place variants ride")
    print("the higher single-array bandwidth; the two-grid variants stream")
    print("19 arrays in and 19 out concurrently and see the lower one.")


if __name__ == "__main__":
    main()
