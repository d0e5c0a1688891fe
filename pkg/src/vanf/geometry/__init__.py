from .camera import (
    Camera,
    look_at,
    read_cameras_json,
    relative_yaw_deg,
    view_sphere_camera,
    write_cameras_json,
)
from .hand import (
    HandPose,
    generate_hand_proxy,
    icosphere,
    random_pose,
    read_pose_json,
    template_vertex_count,
    write_pose_json,
)
from .mesh import LEFT, RIGHT, TriMesh, read_obj, scene_scale, union_aabb, write_obj
from .scene import Scene, make_scene, min_vertex_gap, mirrored_vertex, nearest_vertex

__all__ = [
    "Camera",
    "HandPose",
    "LEFT",
    "RIGHT",
    "Scene",
    "TriMesh",
    "generate_hand_proxy",
    "icosphere",
    "look_at",
    "make_scene",
    "min_vertex_gap",
    "mirrored_vertex",
    "nearest_vertex",
    "random_pose",
    "read_cameras_json",
    "read_obj",
    "read_pose_json",
    "relative_yaw_deg",
    "scene_scale",
    "template_vertex_count",
    "union_aabb",
    "view_sphere_camera",
    "write_cameras_json",
    "write_obj",
    "write_pose_json",
]
