#pragma once

#include <array>
#include <string_view>

namespace vidforge::qa {

struct Exemplar {
  std::string_view caption;
  std::string_view question;
  std::string_view answer;
};

struct QuestionType {
  std::string_view name;
  std::string_view definition;
  std::array<Exemplar, 3> exemplars;
};

namespace exemplar_captions {

inline constexpr std::string_view kKitchen =
    "The video opens in a small kitchen where a woman in a green sweater cracks two eggs into a glass bowl. "
    "She whisks them quickly, pours the mixture into a hot pan on the stove, and tilts the pan so the eggs "
    "spread evenly. The camera slowly moves closer as she folds the omelet in half and slides it onto a white "
    "plate. A black cat sits on the counter watching her the whole time, and at the end she sprinkles chopped "
    "herbs on top.";

inline constexpr std::string_view kTrail =
    "A man in a red helmet rides a mountain bike down a narrow dirt trail through a pine forest. The camera, "
    "mounted on his chest, faces the trail ahead as he speeds up on a steep section, jumps over a fallen log, "
    "and splashes through a shallow stream. Two other riders appear behind him when he stops at a wooden "
    "bridge. They talk briefly, then all three continue downhill, more slowly, as the sky turns orange at "
    "sunset.";

inline constexpr std::string_view kClassroom =
    "In a classroom, a teacher with gray hair writes an equation on a chalkboard while about a dozen students "
    "sit at wooden desks. A boy in the front row raises his hand and walks to the board to solve the problem. "
    "He makes a mistake, erases part of his work, and then writes the correct answer, and the class applauds. "
    "The camera pans slowly from left to right across the room, and a paper airplane flies across the back of "
    "the room near the end.";

}  // namespace exemplar_captions

// clang-format off
inline constexpr std::array<QuestionType, 16> kQuestionTypes{{
    {"Temporal",
     "this task checks reasoning about how actions and events relate in time, such as what happened before, during, or right after another event.",
     {{{exemplar_captions::kKitchen, "What does the woman do right after whisking the eggs?", "She pours the mixture into a hot pan on the stove."},
       {exemplar_captions::kTrail, "What do the riders do after talking at the wooden bridge?", "They continue riding downhill together, more slowly than before."},
       {exemplar_captions::kClassroom, "What happens right after the boy erases part of his work?", "He writes the correct answer on the board."}}}},
    {"Spatial",
     "this task checks whether the viewer perceives where people and objects are located relative to one another in the scene.",
     {{{exemplar_captions::kKitchen, "Where is the cat while the woman cooks?", "It sits on the kitchen counter."},
       {exemplar_captions::kTrail, "Where do the other two riders appear relative to the man when he stops?", "They appear behind him."},
       {exemplar_captions::kClassroom, "Where is the boy sitting before he goes to the board?", "In the front row of desks."}}}},
    {"Causal",
     "this task asks for the reasons behind actions or events: why something happened, what someone intended, or what caused a later event.",
     {{{exemplar_captions::kKitchen, "Why does the woman tilt the pan?", "To spread the egg mixture evenly across the pan."},
       {exemplar_captions::kTrail, "Why does the man stop at the wooden bridge?", "He stops where two other riders catch up with him, and they talk briefly."},
       {exemplar_captions::kClassroom, "Why does the class applaud?", "Because the boy corrects his mistake and writes the right answer."}}}},
    {"Description-Scene",
     "this task asks for a description of the main setting of the video: where it takes place and what the surroundings look like.",
     {{{exemplar_captions::kKitchen, "Where does the video take place?", "In a small home kitchen."},
       {exemplar_captions::kTrail, "What kind of environment is the trail in?", "A pine forest with a narrow dirt trail, a shallow stream, and a wooden bridge."},
       {exemplar_captions::kClassroom, "What is the setting of the video?", "A classroom with a chalkboard and rows of wooden desks."}}}},
    {"Description-Human",
     "this task asks about the people in the video: what they are doing and what they look like.",
     {{{exemplar_captions::kKitchen, "What is the woman wearing?", "A green sweater."},
       {exemplar_captions::kTrail, "What protective gear does the main rider wear?", "A red helmet."},
       {exemplar_captions::kClassroom, "What does the teacher look like?", "The teacher has gray hair."}}}},
    {"Description-Object",
     "this task asks about objects in the video: their appearance, their attributes, and what they are used for.",
     {{{exemplar_captions::kKitchen, "What kind of bowl does the woman use for the eggs?", "A glass bowl."},
       {exemplar_captions::kTrail, "What does the rider jump over on the steep section?", "A fallen log."},
       {exemplar_captions::kClassroom, "What does the teacher write the equation on?", "A chalkboard."}}}},
    {"Count",
     "this task asks how many objects, people, or repeated actions appear, including telling newly appearing elements apart from ones already seen.",
     {{{exemplar_captions::kKitchen, "How many eggs does the woman crack?", "Two."},
       {exemplar_captions::kTrail, "How many riders are on the trail at the end of the video?", "Three."},
       {exemplar_captions::kClassroom, "About how many students are in the classroom?", "About a dozen."}}}},
    {"Binary",
     "this task asks yes-or-no questions about the content of the video.",
     {{{exemplar_captions::kKitchen, "Does the cat jump off the counter?", "No, it stays on the counter watching her."},
       {exemplar_captions::kTrail, "Does the rider cross a stream?", "Yes, he splashes through a shallow stream."},
       {exemplar_captions::kClassroom, "Does the boy get the answer right on his first try?", "No, he makes a mistake first and then corrects it."}}}},
    {"Fine-Grained-Action",
     "this task asks about small, specific details of how an action is carried out.",
     {{{exemplar_captions::kKitchen, "How does the woman move the omelet onto the plate?", "She folds it in half and slides it onto the plate."},
       {exemplar_captions::kTrail, "How does the rider get past the fallen log?", "He jumps over it on his bike."},
       {exemplar_captions::kClassroom, "What does the boy do with his incorrect work?", "He erases part of it."}}}},
    {"Plot-Understanding",
     "this task asks the viewer to interpret the storyline, or the overall course of events, of the video.",
     {{{exemplar_captions::kKitchen, "What is the overall activity shown in the video?", "A woman preparing an omelet from start to finish."},
       {exemplar_captions::kTrail, "How does the ride change after the riders meet?", "They continue as a group and ride more slowly as the sun sets."},
       {exemplar_captions::kClassroom, "What is the main storyline of the video?", "A student tries to solve an equation at the board, fixes a mistake, and is applauded by the class."}}}},
    {"Non-Existent-Actions",
     "this task asks about an action that never happens while keeping the scene details correct; the answer should point out that the action never occurs and say what actually happens.",
     {{{exemplar_captions::kKitchen, "What does the woman do after she drops the bowl?", "The woman never drops the bowl; she whisks the eggs in it and pours them into the pan."},
       {exemplar_captions::kTrail, "When does the rider fall off his bike?", "The rider never falls off; he stays on the bike all the way down the trail."},
       {exemplar_captions::kClassroom, "What does the teacher say after slamming the door?", "The teacher never slams a door; the teacher writes an equation on the chalkboard."}}}},
    {"Time-Order",
     "this task asks about the order in which activities take place in the video.",
     {{{exemplar_captions::kKitchen, "Which happens first, whisking the eggs or sprinkling the herbs?", "Whisking the eggs comes first; the herbs are added at the end."},
       {exemplar_captions::kTrail, "Does the rider cross the stream before or after meeting the other riders?", "Before; he crosses the stream and then stops at the bridge where they meet."},
       {exemplar_captions::kClassroom, "In what order do these happen: the applause, the mistake, the paper airplane?", "The mistake, then the applause, then the paper airplane."}}}},
    {"Object-Direction",
     "this task asks which way objects or people move.",
     {{{exemplar_captions::kKitchen, "In which direction does the omelet move at the end?", "It slides off the pan onto the plate."},
       {exemplar_captions::kTrail, "Which way are the riders heading at the end?", "Downhill."},
       {exemplar_captions::kClassroom, "Which way does the paper airplane fly?", "Across the back of the room."}}}},
    {"Camera-Direction",
     "this task asks how the camera moves or which way it points.",
     {{{exemplar_captions::kKitchen, "How does the camera move while the woman cooks?", "It slowly moves closer."},
       {exemplar_captions::kTrail, "Which way does the camera face?", "Forward, toward the trail ahead of the rider."},
       {exemplar_captions::kClassroom, "In which direction does the camera pan across the classroom?", "From left to right."}}}},
    {"Speed",
     "this task asks how fast things happen, either in absolute terms or compared with one another.",
     {{{exemplar_captions::kKitchen, "How fast does the woman whisk the eggs?", "Quickly."},
       {exemplar_captions::kTrail, "How does the riders' pace after the bridge compare with the steep section?", "They ride more slowly after the bridge."},
       {exemplar_captions::kClassroom, "How quickly does the camera pan across the classroom?", "Slowly."}}}},
    {"Attribute-Change",
     "this task asks how properties of objects or of the whole video, such as size, shape, color, or state, change over time.",
     {{{exemplar_captions::kKitchen, "How do the eggs change over the course of the video?", "They go from raw eggs in a bowl to a folded, cooked omelet on a plate."},
       {exemplar_captions::kTrail, "How does the color of the sky change?", "It turns orange at sunset."},
       {exemplar_captions::kClassroom, "How does the chalkboard change while the boy is at it?", "Part of his work is erased and replaced with the correct answer."}}}},
}};
// clang-format on

}  // namespace vidforge::qa
