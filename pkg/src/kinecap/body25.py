"""BODY_25 keypoint index map.

Index layout of the 25-keypoint skeleton emitted by OpenPose's BODY_25
model. Indices are fixed by the producing tool; every consumer in this
package addresses keypoints through these names.

Image convention: x grows rightward, y grows DOWNWARD. Helpers that need
an upward-positive vertical therefore negate y (see ``elevation_px``).
"""

NOSE = 0
NECK = 1
R_SHOULDER = 2
R_ELBOW = 3
R_WRIST = 4
L_SHOULDER = 5
L_ELBOW = 6
L_WRIST = 7
MID_HIP = 8
R_HIP = 9
R_KNEE = 10
R_ANKLE = 11
L_HIP = 12
L_KNEE = 13
L_ANKLE = 14
R_EYE = 15
L_EYE = 16
R_EAR = 17
L_EAR = 18
L_BIG_TOE = 19
L_SMALL_TOE = 20
L_HEEL = 21
R_BIG_TOE = 22
R_SMALL_TOE = 23
R_HEEL = 24

N_KEYPOINTS = 25

KEYPOINT_NAMES = (
    "nose", "neck",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_shoulder", "l_elbow", "l_wrist",
    "mid_hip",
    "r_hip", "r_knee", "r_ankle",
    "l_hip", "l_knee", "l_ankle",
    "r_eye", "l_eye", "r_ear", "l_ear",
    "l_big_toe", "l_small_toe", "l_heel",
    "r_big_toe", "r_small_toe", "r_heel",
)

# Convenience lookups keyed by body side.
ANKLE = {"left": L_ANKLE, "right": R_ANKLE}
KNEE = {"left": L_KNEE, "right": R_KNEE}
HIP = {"left": L_HIP, "right": R_HIP}
BIG_TOE = {"left": L_BIG_TOE, "right": R_BIG_TOE}
WRIST = {"left": L_WRIST, "right": R_WRIST}
SHOULDER = {"left": L_SHOULDER, "right": R_SHOULDER}
