import csv
import io

from .simulate import Trajectory

TRAJECTORY_COLUMNS = ["n", "err_theta", "err_z", "projected_theta", "projected_w"]


def trajectory_csv(trajectory: Trajectory) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    err_theta = trajectory.err_theta
    err_z = trajectory.err_z
    for i in range(len(trajectory)):
        writer.writerow([
            int(trajectory.n[i]),
            repr(float(err_theta[i])),
            repr(float(err_z[i])),
            int(trajectory.projected[i, 0]),
            int(trajectory.projected[i, 1]),
        ])
    return buf.getvalue()
